"""Electricity price forecasting with from-scratch CNN, LSTM and RNN models."""

__version__ = "0.1.0"

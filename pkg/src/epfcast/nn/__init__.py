"""Neural-network core: layers, the model graph, and gradient checking."""

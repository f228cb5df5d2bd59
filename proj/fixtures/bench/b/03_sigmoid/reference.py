# reference for Sigmoid

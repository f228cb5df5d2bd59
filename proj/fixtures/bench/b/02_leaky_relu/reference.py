# reference for Leaky ReLU

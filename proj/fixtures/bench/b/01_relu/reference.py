# reference for ReLU

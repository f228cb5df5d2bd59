# reference for Tanh

# reference for Lower-Triangular MatMul

# reference for Upper-Triangular MatMul

# reference for Small-k MatMul

# reference for Large-k MatMul

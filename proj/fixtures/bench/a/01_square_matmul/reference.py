# reference for Square MatMul

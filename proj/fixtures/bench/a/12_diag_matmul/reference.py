# reference for MatMul with Diagonal Matrices

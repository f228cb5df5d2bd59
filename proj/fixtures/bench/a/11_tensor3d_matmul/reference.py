# reference for 3D Tensor MatMul

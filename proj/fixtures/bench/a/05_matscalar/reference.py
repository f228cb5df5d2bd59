# reference for Matrix–Scalar Multiply

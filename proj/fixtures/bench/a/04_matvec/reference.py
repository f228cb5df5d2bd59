# reference for Matrix–Vector Multiply

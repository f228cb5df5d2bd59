# reference for Irregular-Shape MatMul

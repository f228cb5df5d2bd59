# reference for Standard MatMul

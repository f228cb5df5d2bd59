# reference for Batched MatMul

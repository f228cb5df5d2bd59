# reference for Softplus

# reference for SELU

# reference for GELU

# reference for ELU

# reference for HardTanh

# reference for Swish

# reference for Softmax

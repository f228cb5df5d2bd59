# reference for Hard Sigmoid

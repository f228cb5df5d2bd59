# reference for LogSoftmax

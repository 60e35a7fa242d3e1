"""Human action recognition from representative frames: BGS + HOG + skeleton
images feeding a CNN/LSTM network with a Softmax / weighted-KNN classifier."""

__version__ = "0.1.0"

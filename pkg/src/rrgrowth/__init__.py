"""Short cycles of growing random regular graphs and their limiting Markov process."""
__version__ = "0.1.0"

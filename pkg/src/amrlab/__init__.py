"""DDPG with an evolvable augmented memory replay (AMR) block."""
__version__ = "0.1.0"

"""wetbench: simulation and analysis toolkit for CSI-free multi-antenna
RF wireless energy transfer over correlated Rician channels."""

__version__ = "0.1.0"

"""aci-workbench: Laurent families, divisor curves and Prym splittings."""

__version__ = "0.1.0"

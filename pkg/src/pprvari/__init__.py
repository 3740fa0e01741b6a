"""pprvari: variability toolchain for product-process-resource models.

Parse a PPR model, derive the product feature model, the process decision
model, the resource feature model and the rules linking them, drive a staged
configuration with automatic option-space reduction, and generate control-code
variants from delta models.
"""

__version__ = "0.1.0"

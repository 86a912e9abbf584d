"""
ContrastForge Library
^^^^^^^^^^^^^^^^^^^^^
Conditional GAN training and evaluation for multi-contrast MR image synthesis
"""
__author__ = 'ContrastForge Developers'
__license__ = 'MIT'
__version__ = '0.3.0.dev1'

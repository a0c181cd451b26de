"""Graph operator learning with a learnable Fourier encoder, moment message
passing, global linear attention and neighbourhood attention.

Modules: ``autodiff`` (reverse-mode engine), ``geometry`` (points and radius
graphs), ``spectral``, ``msgpass``, ``attention``, ``gatlayer`` (model
blocks), ``model`` (GOLA and the GKN/GCN baselines), ``pdedata`` (benchmark
generators and file format), ``train`` and ``cli``.
"""
__version__ = "0.1.0"

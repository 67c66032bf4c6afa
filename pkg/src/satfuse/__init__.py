"""satfuse: satellite patch classification with handcrafted-feature fusion.

Texture/vegetation feature extraction from 4-channel patches,
distribution-separability feature ranking, and a small CNN whose
bottleneck is fused with the handcrafted features, trained with Adadelta.
"""

__version__ = "0.1.0"

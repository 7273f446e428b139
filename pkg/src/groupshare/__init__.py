"""Text classification with group-hashed embedding weight sharing.

Words that external resources (synonym lexicons, word clusters, ontology
prefixes) place in the same group are forced to share a subset of their
embedding coordinates. Each coordinate of a word's shared embedding row is
hashed onto one of the word's groups, so the true trainable parameters are
the per-group vectors. A two-channel convolutional classifier consumes the
pretrained matrix and the shared matrix side by side.
"""

__version__ = "0.1.0"

"""Reference-free patch-domain image quality enhancement.

Pipeline: tile images into patches, split them into low/high quality
domains with a small classifier, cluster the high-quality patches into
style domains, train disentangled content/quality/style translators
with adversarial + reconstruction self-supervision, then enhance and
style-unify full images patch by patch.
"""

__version__ = "0.1.0"

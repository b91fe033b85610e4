"""Root conftest; tests import loqc_app without installing it.

Nothing here touches sys.path: under pytest's default prepend import mode,
loading this file inserts its directory, the repository root, into sys.path.
"""

"""Build script: compiles the optional Cython pricing kernel.

The package works without the extension (the pure-Python labeling engine is
selected at import when ``rdarp._labeling_cy`` is missing); building it makes
pricing roughly an order of magnitude faster on benchmark-sized instances.
"""

import os

from setuptools import Extension, setup

PYX = os.path.join("src", "rdarp", "_labeling_cy.pyx")

extensions = []
if os.path.exists(PYX):
    try:
        from Cython.Build import cythonize

        extensions = cythonize(
            [Extension("rdarp._labeling_cy", [PYX])],
            compiler_directives={"language_level": "3", "boundscheck": False, "wraparound": False},
        )
    except ImportError:
        pass

setup(ext_modules=extensions)

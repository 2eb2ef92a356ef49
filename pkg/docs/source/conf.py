# Configuration file for the Sphinx documentation builder.
#
# https://www.sphinx-doc.org/en/master/usage/configuration.html

# -- Path setup --------------------------------------------------------------

import os
import sys
sys.path.insert(0, os.path.abspath('../..'))

# -- Project information -----------------------------------------------------

from importlib.metadata import version as get_version, PackageNotFoundError
try:
    release = get_version('motifcrf')
except PackageNotFoundError:
    release = '0.1.0'
version = '.'.join(release.split('.')[:2])

project = 'motifcrf'
copyright = '2026, motifcrf developers'
author = 'motifcrf developers'

# -- General configuration ---------------------------------------------------

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.napoleon',
    'sphinx.ext.mathjax',
    'sphinx.ext.autosectionlabel'
    ]

templates_path = ['_templates']
exclude_patterns = []

pygments_style = 'sphinx'

master_doc = 'index'

# -- Options for HTML output -------------------------------------------------

html_theme = 'alabaster'
html_static_path = []

html_sidebars = {
    '**':       ['localtoc.html', 'relations.html', 'searchbox.html']
}

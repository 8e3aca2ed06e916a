# -*- coding: utf-8 -*-
#
# readrank documentation build configuration file.
#
# Only the values that differ from the sphinx-quickstart defaults are
# set here.

import sys
import os

sys.path.insert(0, os.path.abspath('../src'))
import readrank

# -- General configuration ------------------------------------------------

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.doctest',
    'sphinx.ext.coverage',
]

templates_path = ['_templates']
source_suffix = '.rst'
master_doc = 'index'

project = u'readrank'
copyright = u'the readrank contributors'

version = readrank.__VERSION__
release = readrank.__VERSION__

exclude_patterns = ['_build']
pygments_style = 'sphinx'

# -- Options for HTML output ----------------------------------------------

html_theme = 'default'
html_static_path = ['_static']
htmlhelp_basename = 'readrankdoc'

# -- Options for LaTeX output ---------------------------------------------

latex_elements = {
}

latex_documents = [
  ('index', 'readrank.tex', u'readrank Documentation',
   u'the readrank contributors', 'manual'),
]

# -- Options for manual page output ---------------------------------------

man_pages = [
    ('readrank_cli.1', 'readrank_cli',
     u'Train and evaluate bidirectional readability models',
     [u'the readrank contributors'], 1),
]

# -- Options for Texinfo output -------------------------------------------

texinfo_documents = [
  ('index', 'readrank', u'readrank Documentation',
   u'the readrank contributors', 'readrank',
   'Bidirectional long-document readability assessment.',
   'Miscellaneous'),
]

# Configuration file for the Sphinx documentation builder.
#
# This file only contains a selection of the most common options. For a full
# list see the documentation:
# https://www.sphinx-doc.org/en/master/usage/configuration.html

# -- Path setup --------------------------------------------------------------

# If extensions (or modules to document with autodoc) are in another directory,
# add these directories to sys.path here. If the directory is relative to the
# documentation root, use os.path.abspath to make it absolute, like shown here.

import os
import sys
sys.path.insert(0, os.path.abspath('../spavid'))
autodoc_mock_imports = ['numpy','scipy','pandas','matplotlib','sklearn','click','spavid']


# -- Project information -----------------------------------------------------

project = 'spavid'
copyright = '2026, spavid developers'
author = 'spavid developers'

# The full version, including alpha/beta/rc tags
release = '0.1.0'


# -- General configuration ---------------------------------------------------

# Add any Sphinx extension module names here, as strings. They can be
# extensions coming with Sphinx (named 'sphinx.ext.*') or your custom
# ones.
extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.napoleon'
]

# Some extension configurations
autodoc_typehints = "description"
autodoc_member_order = "bysource"   # Retain order of functions in source
napoleon_custom_sections = ['Actions']
# napoleon_custom_sections = [('Actions', 'Returns')] # Treat custom Actions section like Returns

# Add any paths that contain templates here, relative to this directory.
templates_path = ['_templates']

# List of patterns, relative to source directory, that match files and
# directories to ignore when looking for source files.
# This pattern also affects html_static_path and html_extra_path.
exclude_patterns = ['_build', 'Thumbs.db', '.DS_Store']


# -- Options for HTML output -------------------------------------------------

# Set=False to not prepend module names to function names in docstrings
add_module_names = False

# The theme to use for HTML and HTML Help pages.  See the documentation for
# a list of builtin themes.
#
html_theme = 'nature' # 'furo' 

# Add any paths that contain custom static files (such as style sheets) here,
# relative to this directory. They are copied after the builtin static files,
# so a file named "default.css" will overwrite the builtin "default.css".
# html_static_path = ['_static']

# # Functions below remove module docstrings auto-inserted with automodule directives
# def remove_module_docstring(app, what, name, obj, options, lines):
#     if what == "module":
#         del lines[:]

# def setup(app):
#     app.connect("autodoc-process-docstring", remove_module_docstring)

#!/usr/bin/env python

import sys
import os

HERE = os.path.dirname(__file__)
sys.path.insert(0, os.path.join(HERE, 'src'))
sys.path.insert(0, os.path.join(HERE, 'test'))

import readrank
from setuptools import setup

with open(os.path.join(HERE, 'README'), encoding='utf-8') as f:
    LONG_DESC = f.read()

setup(
    name="readrank",

    version=readrank.__VERSION__,

    description="Bidirectional long-document readability assessment with "
                "difficulty embeddings and a pairwise ranking head.",
    long_description=LONG_DESC,

    license="BSD",

    keywords=['readability', 'ranking', 'hierarchical attention',
              'sentence difficulty', 'NLP'],

    classifiers=[
        'Development Status :: 3 - Alpha',

        'Intended Audience :: Science/Research',

        'License :: OSI Approved :: BSD License',

        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: 3.8',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Topic :: Text Processing :: Linguistic',
    ],

    package_dir={'': 'src'},
    packages=['readrank'],

    scripts=['src/readrank_cli'],

    test_suite="test.build_test_suite",

    python_requires='>=3.8',
    install_requires=[
        'ujson>=2.0',
        'torch>=2.0',
        'numpy',
        'scikit-learn',
        'pandas>=1.5',
        'tqdm',
    ],
    extras_require={'test': ['coverage']},

    zip_safe=True,
)

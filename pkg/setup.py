from setuptools import find_packages, setup


def readfile(name):
    with open(name) as f:
        return f.read()


readme = readfile('README.rst')
changes = readfile('CHANGES.rst')

install_requires = [
    'numpy',
    'scipy',
    'httpx',
    'tenacity',
    'PyYAML',
]

docs_require = ['Sphinx', 'pylons-sphinx-themes']

tests_require = ['pytest', 'pytest-cov', 'mock']

setup(
    name='qppjudge',
    version='0.1',
    description=(
        'Query performance prediction from generated relevance judgments.'
    ),
    long_description=readme + '\n\n' + changes,
    long_description_content_type='text/x-rst',
    license='MIT',
    packages=find_packages('src', exclude=['tests']),
    package_dir={'': 'src'},
    include_package_data=True,
    python_requires='>=3.8',
    install_requires=install_requires,
    extras_require={'docs': docs_require, 'testing': tests_require},
    entry_points={"console_scripts": ["qppjudge = qppjudge.cli:main"]},
    zip_safe=False,
    keywords=(
        'information retrieval query performance prediction qpp trec '
        'relevance judgments llm'
    ),
    classifiers=[
        'Development Status :: 3 - Alpha',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: MIT License',
        'Natural Language :: English',
        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: 3.8',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Programming Language :: Python :: 3.11',
        'Programming Language :: Python :: Implementation :: CPython',
        'Topic :: Scientific/Engineering :: Information Analysis',
    ],
)

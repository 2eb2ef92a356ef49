'''This sets up the package.
'''
from setuptools import setup, find_packages

def readme():
    """Load the README file."""
    with open('README.md') as f:
        return f.read()


with open('requirements.txt') as infd:
    INSTALL_REQUIRES = [x.strip('\n') for x in infd.readlines() if x.strip()]

setup(name='motifcrf',
    version='0.1.0',
    description='Motif transformation families in sonata movements: labelling, '
                'conditional random field fitting and permutation tests.',
    long_description=readme(),
    long_description_content_type="text/markdown",
    classifiers=[
        'Development Status :: 4 - Beta',
        'License :: OSI Approved :: MIT License',
        "Intended Audience :: Science/Research",
        "Topic :: Multimedia :: Sound/Audio :: Analysis",
        "Topic :: Scientific/Engineering :: Mathematics",
        "Operating System :: OS Independent",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
    ],
    license='MIT',
    packages=find_packages(exclude=['tests']),
    install_requires=INSTALL_REQUIRES,
    extras_require={'test': ['pytest', 'hypothesis']},
    entry_points={'console_scripts': ['motif-crf=motifcrf.cli:main']},
    include_package_data=True,
    zip_safe=False,
    python_requires='>=3.8')

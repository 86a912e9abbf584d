from setuptools import setup, find_packages

install_requires = [
    'numpy>=1.22',
    'scipy>=1.8',
]

python_requires = '>=3.8'


setup(
    name='ContrastForge',
    version=__import__('contrastforge').__version__,
    packages=find_packages(),
    author='ContrastForge Developers',
    description='Conditional GAN training and evaluation for multi-contrast MR image synthesis',
    zip_safe=False,
    license='MIT',
    keywords='python gan mri image-synthesis autodiff',
    install_requires=install_requires,
    python_requires=python_requires,
    entry_points={
        'console_scripts': ['contrastforge=contrastforge.cli:main'],
    },
    classifiers=[
        'Development Status :: 3 - Alpha',
        'Intended Audience :: Science/Research',
        'Programming Language :: Python',
        'Operating System :: OS Independent',
        'Programming Language :: Python :: 3.8',
        'License :: OSI Approved :: MIT License',
    ]
)

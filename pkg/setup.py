from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # fall back to the pure-Python tracer
    ext_modules = []
else:
    ext_modules = cythonize(
        [Extension("geoloop._tracecore", ["src/geoloop/_tracecore.pyx"])],
        compiler_directives={"language_level": 3},
    )

setup(ext_modules=ext_modules)

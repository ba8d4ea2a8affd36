#include <pybind11/pybind11.h>
PYBIND11_MODULE(_mrd, m) { m.doc() = "placeholder"; }

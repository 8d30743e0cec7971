#include "layopt/core.hpp"

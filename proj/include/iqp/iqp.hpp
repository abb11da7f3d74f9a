#pragma once

#include "bloch.hpp"
#include "complex_sphere.hpp"
#include "diagnostics.hpp"
#include "errors.hpp"
#include "mixed_state.hpp"
#include "sampling.hpp"
#include "sweep.hpp"

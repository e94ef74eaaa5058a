#pragma once

#include "experiment.hpp"
#include "fem.hpp"
#include "interpolation.hpp"
#include "lod.hpp"
#include "mesh.hpp"
#include "problems.hpp"

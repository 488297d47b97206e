#pragma once

#include "circdmd/analysis.hpp"
#include "circdmd/datamodel.hpp"
#include "circdmd/embedding.hpp"
#include "circdmd/errors.hpp"
#include "circdmd/sparsity.hpp"
#include "circdmd/spectral.hpp"
#include "circdmd/synthgen.hpp"
#include "circdmd/variants.hpp"

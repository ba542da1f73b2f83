#pragma once

#include "tbss/baseline.hpp"
#include "tbss/error.hpp"
#include "tbss/io.hpp"
#include "tbss/metrics.hpp"
#include "tbss/morphology.hpp"
#include "tbss/phantom.hpp"
#include "tbss/search.hpp"
#include "tbss/volume.hpp"

#pragma once

#include "fbt/dmc.hpp"
#include "fbt/errors.hpp"
#include "fbt/fano.hpp"
#include "fbt/images.hpp"
#include "fbt/numeric.hpp"
#include "fbt/parallel.hpp"
#include "fbt/partitioner.hpp"
#include "fbt/report.hpp"
#include "fbt/spectrum.hpp"
#include "fbt/wiretap.hpp"

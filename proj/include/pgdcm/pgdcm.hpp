#ifndef PGDCM_PGDCM_HPP
#define PGDCM_PGDCM_HPP

#include "pgdcm/attribute_space.hpp"
#include "pgdcm/compare.hpp"
#include "pgdcm/effects.hpp"
#include "pgdcm/error.hpp"
#include "pgdcm/gibbs.hpp"
#include "pgdcm/io.hpp"
#include "pgdcm/matrix.hpp"
#include "pgdcm/metrics.hpp"
#include "pgdcm/parallel.hpp"
#include "pgdcm/rhat.hpp"
#include "pgdcm/rng.hpp"
#include "pgdcm/simulator.hpp"
#include "pgdcm/special.hpp"
#include "pgdcm/vb.hpp"

#endif

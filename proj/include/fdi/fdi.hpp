#ifndef FDI_FDI_HPP_
#define FDI_FDI_HPP_

#include "fdi/archive.hpp"
#include "fdi/binary_model.hpp"
#include "fdi/dataset.hpp"
#include "fdi/distance_model.hpp"
#include "fdi/distribution_model.hpp"
#include "fdi/error.hpp"
#include "fdi/harness.hpp"
#include "fdi/ingest.hpp"
#include "fdi/io.hpp"
#include "fdi/new_user.hpp"
#include "fdi/parallel.hpp"
#include "fdi/report.hpp"
#include "fdi/rng.hpp"
#include "fdi/sampling.hpp"
#include "fdi/topk.hpp"
#include "fdi/transform.hpp"

#endif  // FDI_FDI_HPP_

#ifndef HDCM_HDCM_HPP
#define HDCM_HDCM_HPP

#include "csv.hpp"
#include "dataset_io.hpp"
#include "diagnostics.hpp"
#include "error.hpp"
#include "likelihood.hpp"
#include "model.hpp"
#include "posterior.hpp"
#include "posterior_io.hpp"
#include "random.hpp"
#include "reliability.hpp"
#include "report.hpp"
#include "sampler.hpp"
#include "scenario.hpp"
#include "spec_file.hpp"
#include "synthetic.hpp"

#endif

#pragma once

#include <corpca/checkpoint.hpp>
#include <corpca/config.hpp>
#include <corpca/engine.hpp>
#include <corpca/error.hpp>
#include <corpca/experiment.hpp>
#include <corpca/io.hpp>
#include <corpca/linalg.hpp>
#include <corpca/measurement.hpp>
#include <corpca/motion.hpp>
#include <corpca/prox.hpp>
#include <corpca/roc.hpp>
#include <corpca/synthetic.hpp>

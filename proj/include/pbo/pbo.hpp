#ifndef PBO_PBO_HPP
#define PBO_PBO_HPP

#include <pbo/acquisition.hpp>
#include <pbo/baselines.hpp>
#include <pbo/errors.hpp>
#include <pbo/external.hpp>
#include <pbo/functions.hpp>
#include <pbo/gp.hpp>
#include <pbo/harness.hpp>
#include <pbo/kernels.hpp>
#include <pbo/objectives.hpp>
#include <pbo/optimizer.hpp>
#include <pbo/random.hpp>
#include <pbo/record.hpp>

#endif

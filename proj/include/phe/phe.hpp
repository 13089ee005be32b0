#pragma once

#include "phe/agents.hpp"
#include "phe/environments.hpp"
#include "phe/errors.hpp"
#include "phe/features.hpp"
#include "phe/gfa.hpp"
#include "phe/harness.hpp"
#include "phe/mdp.hpp"
#include "phe/perturbed_ls.hpp"
#include "phe/plot.hpp"
#include "phe/random.hpp"

#pragma once

#include "splitguard/error.hpp"
#include "splitguard/nn/matrix.hpp"
#include "splitguard/nn/network.hpp"
#include "splitguard/nn/loss.hpp"
#include "splitguard/nn/sgd.hpp"
#include "splitguard/data/dataset.hpp"
#include "splitguard/data/idx.hpp"
#include "splitguard/protocol/detector.hpp"
#include "splitguard/protocol/models.hpp"
#include "splitguard/protocol/fsha.hpp"
#include "splitguard/protocol/exchange.hpp"
#include "splitguard/protocol/session.hpp"
#include "splitguard/sglc/score.hpp"
#include "splitguard/sglc/policy.hpp"
#include "splitguard/sglc/detector.hpp"
#include "splitguard/sgad/lof.hpp"
#include "splitguard/sgad/detector.hpp"
#include "splitguard/harness/config.hpp"
#include "splitguard/harness/trial.hpp"
#include "splitguard/harness/report.hpp"
#include "splitguard/harness/experiment.hpp"
#include "splitguard/harness/selftest.hpp"
#include "splitguard/harness/cli.hpp"

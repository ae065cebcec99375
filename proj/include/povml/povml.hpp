#pragma once

// Everything in one include.

#include "povml/common.hpp"
#include "povml/corpus.hpp"
#include "povml/corpus_io.hpp"
#include "povml/eval.hpp"
#include "povml/features.hpp"
#include "povml/generate.hpp"
#include "povml/learners.hpp"
#include "povml/orchestrator.hpp"
#include "povml/service.hpp"
#include "povml/triage.hpp"

#pragma once

#include "factgenius/cache.hpp"
#include "factgenius/error.hpp"
#include "factgenius/eval_harness.hpp"
#include "factgenius/evidence.hpp"
#include "factgenius/fuzzy.hpp"
#include "factgenius/kg_store.hpp"
#include "factgenius/llm_gateway.hpp"
#include "factgenius/mock_llm.hpp"
#include "factgenius/pipeline.hpp"
#include "factgenius/prompts.hpp"
#include "factgenius/relation_miner.hpp"
#include "factgenius/response_parser.hpp"

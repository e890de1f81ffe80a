#pragma once

#include "forge/common.hpp"
#include "forge/text.hpp"
#include "forge/parallel.hpp"
#include "forge/corpus.hpp"
#include "forge/dedup.hpp"
#include "forge/balance.hpp"
#include "forge/tokenizer.hpp"
#include "forge/transfer.hpp"
#include "forge/masking.hpp"
#include "forge/cloze.hpp"
#include "forge/segmentation.hpp"

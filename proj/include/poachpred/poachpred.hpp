#ifndef POACHPRED_POACHPRED_HPP
#define POACHPRED_POACHPRED_HPP

#include "core.hpp"
#include "dataset.hpp"
#include "synthetic.hpp"
#include "elicitation.hpp"
#include "augmentation.hpp"
#include "tree.hpp"
#include "net.hpp"
#include "model.hpp"
#include "evaluation.hpp"
#include "pipeline.hpp"

#endif  // POACHPRED_POACHPRED_HPP

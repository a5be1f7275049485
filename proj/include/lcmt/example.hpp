#pragma once

// One training/decoding unit. src_ids carry any language tag / length token
// up front; tgt_ids hold y_1..y_J with no BOS/EOS. target_len is J, the
// subword count of the target excluding BOS/EOS.

#include <vector>

namespace lcmt {

struct Example {
    std::vector<int> src_ids;
    std::vector<int> tgt_ids;
    int target_len = -1;  // J; -1 = not annotated
    int lang_tag = -1;    // vocab id of the target-language tag, -1 = none
};

}  // namespace lcmt

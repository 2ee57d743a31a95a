#include "chatabl/op_table.hpp"

namespace chatabl {

OperationTable make_standard_table() {
    OperationTable t;
    for (int a = 0; a <= 1; ++a) {
        for (int b = 0; b <= 1; ++b) {
            for (int c = 0; c <= 1; ++c) {
                AdderOut out;
                out.sum = static_cast<std::uint8_t>(a ^ b ^ c);
                out.carry = static_cast<std::uint8_t>((a + b + c) >= 2 ? 1 : 0);
                t.set(a, b, c, out);
            }
        }
    }
    return t;
}

} // namespace chatabl

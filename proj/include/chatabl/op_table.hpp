#pragma once

#include <array>
#include <cstdint>

namespace chatabl {

// Output of one table entry: sum bit and carry-out bit.
struct AdderOut {
    std::uint8_t sum;
    std::uint8_t carry;

    bool operator==(const AdderOut&) const = default;
};

// A full-adder style truth table (a, b, carry_in) -> (sum, carry_out).
// This is the hypothesis space of hidden arithmetic rules: 4 possible
// outputs for each of the 8 input triples, 4^8 = 65536 tables in total.
class OperationTable {
public:
    static constexpr int kNumInputs = 8;
    static constexpr std::uint32_t kNumCodes = 65536;

    OperationTable() : outputs_{} {}

    static int input_index(int a, int b, int carry_in) {
        return (a << 2) | (b << 1) | carry_in;
    }

    AdderOut apply(int a, int b, int carry_in) const {
        return outputs_[input_index(a, b, carry_in)];
    }

    void set(int a, int b, int carry_in, AdderOut out) {
        outputs_[input_index(a, b, carry_in)] = out;
    }

    // Canonical 16-bit code: bit 2*i holds the sum bit of input i, bit
    // 2*i + 1 holds the carry-out bit. Injective by construction.
    std::uint16_t code() const {
        std::uint16_t c = 0;
        for (int i = 0; i < kNumInputs; ++i) {
            c |= static_cast<std::uint16_t>(outputs_[i].sum) << (2 * i);
            c |= static_cast<std::uint16_t>(outputs_[i].carry) << (2 * i + 1);
        }
        return c;
    }

    static OperationTable from_code(std::uint16_t code) {
        OperationTable t;
        for (int i = 0; i < kNumInputs; ++i) {
            t.outputs_[i].sum = (code >> (2 * i)) & 1;
            t.outputs_[i].carry = (code >> (2 * i + 1)) & 1;
        }
        return t;
    }

    bool operator==(const OperationTable&) const = default;

private:
    std::array<AdderOut, kNumInputs> outputs_;
};

// Standard binary addition: sum = a ^ b ^ c, carry = majority(a, b, c).
OperationTable make_standard_table();

} // namespace chatabl

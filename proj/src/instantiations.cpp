#include "fashion/nn/adam.hpp"
#include "fashion/stage.hpp"

namespace fashion {

template class ConditionalGenerator<float>;
template class ConditionalGenerator<double>;
template class ConditionalDiscriminator<float>;
template class ConditionalDiscriminator<double>;
template class TextEncoder<float>;
template class TextEncoder<double>;
template class StageNetworks<float>;
template class StageNetworks<double>;
template class nn::Adam<float>;

}  // namespace fashion

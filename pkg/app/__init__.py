# TSCH + SDN track slicing simulator

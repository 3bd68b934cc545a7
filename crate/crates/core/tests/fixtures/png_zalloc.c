void *png_zalloc(void *opaque, unsigned int items, unsigned int size)
{
    if (items >= UINT_MAX / size)
        return NULL;
    return malloc(items * size);
}

int png_setup(void *state, unsigned int count)
{
    void *buf;
    buf = png_zalloc(state, count, 0);
    if (buf == NULL)
        return -1;
    return 0;
}
